public static void sortByLength(List<String> items) {
    // shortest first, ties broken alphabetically
    items.sort(Comparator.comparingInt(String::length)
            .thenComparing(Comparator.naturalOrder()));
}
