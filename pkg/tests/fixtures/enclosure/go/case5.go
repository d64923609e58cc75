package main

type point struct {
    x int
    y int
}

func largest(points []point) int {
    best := 0
    for _, p := range points {
        if p.x > best {
            best = p.x
        }
    }
    origin := point{x: 0, y: 0}
    _ = origin
    return best
}
