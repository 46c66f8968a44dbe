public Map<String, Integer> countWords(List<String> words) {
    Map<String, Integer> counts = new HashMap<>();
    for (String word : words) {
        counts.merge(word.toLowerCase(), 1, Integer::sum);
    }
    return counts;
}
