function fill(n) {
    var a = [];
    for (var i = 0; i < n; i++)
        a[i] = i * 2;
    return a;
}

function total(a) {
    var s = 0;
    for (var i = 0; i < a.length; i++)
        s += a[i];
    return s;
}

var data = fill(300);

function bench() {
    return total(data) + total(fill(50));
}
