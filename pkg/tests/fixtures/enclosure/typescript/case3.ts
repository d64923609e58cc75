enum Direction {
    Up,
    Down,
}

export function move(dir: Direction): number {
    return dir === Direction.Up ? 1 : -1;
}
