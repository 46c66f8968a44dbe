public static int maxValue(int[] values) {
    int best = Integer.MIN_VALUE;
    for (int v : values) {
        if (v > best) {
            best = v;
        }
    }
    return best;
}
