public synchronized void addListener(EventListener listener) {
    if (listener == null) {
        throw new NullPointerException("listener");
    }
    if (!listeners.contains(listener)) {
        listeners.add(listener);
    }
}
