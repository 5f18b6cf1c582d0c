var bitwiseAndValue = 4294967296;
var i = 0;

function bench() {
    bitwiseAndValue = 4294967296;
    for (i = 0; i < 2000; i++)
        bitwiseAndValue = bitwiseAndValue & i;
    return bitwiseAndValue;
}
