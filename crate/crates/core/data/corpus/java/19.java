public static <T> List<List<T>> partition(List<T> list, int size) {
    List<List<T>> chunks = new ArrayList<>();
    for (int start = 0; start < list.size(); start += size) {
        chunks.add(list.subList(start, Math.min(start + size, list.size())));
    }
    return chunks;
}
