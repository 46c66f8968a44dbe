public class SimpleCalculator {
    public int add(int a, int b) {
        return a + b;
    }
}
