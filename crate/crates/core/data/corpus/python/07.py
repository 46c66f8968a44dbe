def retry(func, attempts=3, delay=0.5):
    last_error = None
    for attempt in range(attempts):
        try:
            return func()
        except Exception as exc:  # noqa: BLE001
            last_error = exc
            time.sleep(delay * (2 ** attempt))
    raise last_error
