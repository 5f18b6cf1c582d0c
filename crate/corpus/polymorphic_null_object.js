function make(i) {
    if (i % 3 == 0)
        return null;
    return { value: i, next: null };
}

function walk(n) {
    var s = 0, hits = 0;
    for (var i = 0; i < n; i++) {
        var o = make(i);
        if (o != null) {
            s += o.value;
            hits++;
        }
    }
    return s - hits;
}

function bench() {
    return walk(300);
}
