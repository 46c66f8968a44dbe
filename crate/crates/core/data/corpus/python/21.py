def clamp(value, lower, upper):
    if lower > upper:
        raise ValueError("lower bound exceeds upper bound")
    return max(lower, min(value, upper))
