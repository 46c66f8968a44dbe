function binarySearch(sorted, target) {
  let low = 0;
  let high = sorted.length - 1;
  while (low <= high) {
    const mid = (low + high) >> 1;
    if (sorted[mid] < target) low = mid + 1;
    else if (sorted[mid] > target) high = mid - 1;
    else return mid;
  }
  return -1;
}
