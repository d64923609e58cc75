import java.util.function.Supplier;

public class Lazy {
    public Supplier<String> supplier() {
        Supplier<String> s = () -> {
            return "value";
        };
        return s;
    }
}
