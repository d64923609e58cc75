const double = (x) => {
    return x * 2;
};

const config = {
    retries: 3,
    describe() {
        return "retries=" + this.retries;
    },
};
