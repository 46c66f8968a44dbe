type SimpleCalculator struct {
	memory int
}

func (c *SimpleCalculator) Add(value int) int {
	c.memory += value
	return c.memory
}
