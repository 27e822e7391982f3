int sf_dead_branch(int v)
{
    char b[4];
    b[0] = (char)v;
    if (v != v) {
        b[3] = 'x'; /* WARN */
    }
    return b[0];
}
