package main

func makeAdder(base int) func(int) int {
    add := func(delta int) int {
        return base + delta
    }
    return add
}
