func BinarySearch(sorted []int, target int) int {
	low, high := 0, len(sorted)-1
	for low <= high {
		mid := (low + high) / 2
		switch {
		case sorted[mid] < target:
			low = mid + 1
		case sorted[mid] > target:
			high = mid - 1
		default:
			return mid
		}
	}
	return -1
}
