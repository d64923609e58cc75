import os


def alpha(x):
    return x + 1


def beta(y):
    total = y * 2
    return total
