function isPrime(number) {
  if (number < 2) return false;
  for (let d = 2; d * d <= number; d++) {
    if (number % d === 0) return false;
  }
  return true;
}
