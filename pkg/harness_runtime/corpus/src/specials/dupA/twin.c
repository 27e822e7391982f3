int dup_helper(int v)
{
    return v * 3 + 1;
}

int side_foo(int v)
{
    return dup_helper(v) + 7;
}
