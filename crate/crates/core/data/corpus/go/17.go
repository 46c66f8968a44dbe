func Chunk(items []int, size int) [][]int {
	var chunks [][]int
	for size < len(items) {
		items, chunks = items[size:], append(chunks, items[0:size:size])
	}
	return append(chunks, items)
}
