#include <vector>

template <typename T>
T largest(const std::vector<T> &values) {
    T best = values[0];
    for (const T &v : values) {
        if (v > best) {
            best = v;
        }
    }
    return best;
}
