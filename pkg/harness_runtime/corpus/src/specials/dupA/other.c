int dup_helper(int v)
{
    return v * 5 + 2;
}

int side_bar(int v)
{
    return dup_helper(v) - 4;
}
