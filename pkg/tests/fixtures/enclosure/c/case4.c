int classify(int value) {
    if (value > 10) {
        return 2;
    } else if (value > 0) {
        return 1;
    }
    switch (value) {
        case 0: {
            return 0;
        }
        default:
            break;
    }
    return -1;
}
