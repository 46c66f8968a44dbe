public static long countVowels(String text) {
    return text.chars()
        .filter(c -> "aeiouAEIOU".indexOf(c) >= 0)
        .count();
}
