function mix(n) {
    var x = 0, y = 0.5;
    for (var i = 0; i < n; i++) {
        x = x + i;
        if (i % 3 == 0)
            x = x + 0.25;
        y = y * 0.5 + x / 8;
    }
    return y;
}

function bench() {
    return mix(400);
}
