def read_lines(path, encoding="utf-8"):
    """Return the stripped lines of a text file."""
    with open(path, encoding=encoding) as handle:
        return [line.strip() for line in handle]
