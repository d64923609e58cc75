function makeCounter(start) {
    let value = start;

    function bump(step) {
        value += step;
        return value;
    }

    return bump;
}
