function build(n) {
    var s = "";
    for (var i = 0; i < n; i++) {
        s = s + i;
        if (s.length > 40)
            s = "x";
    }
    return s;
}

function bench() {
    return build(300);
}
