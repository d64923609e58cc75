#include <stdlib.h>

static const int SIZES[] = {4, 8, 16};

static int counter = 0;
