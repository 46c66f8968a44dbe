function countWords(text) {
  const counts = {};
  for (const word of text.split(/\s+/)) {
    if (!word) continue;
    counts[word] = (counts[word] || 0) + 1;
  }
  return counts;
}
