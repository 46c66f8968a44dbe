class SimpleCalculator {
  constructor() {
    this.memory = 0;
  }

  add(value) {
    this.memory += value;
    return this.memory;
  }
}
