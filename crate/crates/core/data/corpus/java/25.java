public boolean hasExpired(Instant now) {
    switch (policy) {
        case NEVER:
            return false;
        case FIXED:
            return now.isAfter(createdAt.plus(timeToLive));
        default:
            return lastAccess.plus(timeToLive).isBefore(now);
    }
}
