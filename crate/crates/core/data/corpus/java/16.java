public double averageScore(Collection<Double> scores) {
    double total = 0.0;
    for (double score : scores) total += score;
    return scores.isEmpty() ? 0.0 : total / scores.size();
}
