interface Shape {
    double area();

    default String label() {
        return "shape";
    }
}

enum Color {
    RED,
    GREEN
}
