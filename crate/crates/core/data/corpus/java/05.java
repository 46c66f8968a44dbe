public static long factorial(int n) {
    if (n < 0) {
        throw new IllegalArgumentException("negative input: " + n);
    }
    long result = 1L;
    for (int i = 2; i <= n; i++) {
        result *= i;
    }
    return result;
}
