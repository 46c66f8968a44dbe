class SimpleCalculator:
    def __init__(self):
        self.memory = 0

    def add(self, value):
        self.memory += value
        return self.memory
