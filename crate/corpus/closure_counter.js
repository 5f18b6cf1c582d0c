function counter(step) {
    var count = 0;
    return function() {
        count += step;
        return count;
    };
}

function bench() {
    var a = counter(1), b = counter(3);
    var t = 0;
    for (var i = 0; i < 200; i++)
        t = t + a() - b();
    return t;
}
