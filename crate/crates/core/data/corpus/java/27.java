public void shuffleDeck(Random rng) {
    for (int i = cards.length - 1; i > 0; i--) {
        int j = rng.nextInt(i + 1);
        Card tmp = cards[i];
        cards[i] = cards[j];
        cards[j] = tmp;
    }
}
