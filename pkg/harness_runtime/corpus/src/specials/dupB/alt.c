int side_foo(int v)
{
    return v + 100;
}
