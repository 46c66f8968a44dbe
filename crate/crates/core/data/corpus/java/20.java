public String toString() {
    return "Interval[" + lowerBound + ", " + upperBound + "]";
}
