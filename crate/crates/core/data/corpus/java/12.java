public Optional<User> findUserById(long userId) {
    return users.stream()
        .filter(u -> u.getId() == userId)
        .findFirst();
}
