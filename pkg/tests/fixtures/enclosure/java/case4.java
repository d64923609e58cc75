public class Registry {
    static final java.util.Map<String, Integer> CACHE = new java.util.HashMap<>();

    static {
        CACHE.put("one", 1);
    }

    private Registry() {
    }
}
