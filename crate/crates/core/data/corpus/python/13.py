def normalize_vector(vec):
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return [x / norm for x in vec]
