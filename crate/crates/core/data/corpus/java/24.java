public static String reverseWords(String sentence) {
    String[] parts = sentence.split("\\s+");
    Collections.reverse(Arrays.asList(parts));
    return String.join(" ", parts);
}
