public int binarySearch(int[] sortedArray, int target) {
    int low = 0;
    int high = sortedArray.length - 1;
    while (low <= high) {
        int mid = (low + high) >>> 1;
        if (sortedArray[mid] < target) {
            low = mid + 1;
        } else if (sortedArray[mid] > target) {
            high = mid - 1;
        } else {
            return mid;
        }
    }
    return -(low + 1);
}
