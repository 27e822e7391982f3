int sf_before_asm(int v)
{
    return v + 1;
}

__asm__(".globl sf_asm_anchor\n"
        ".type sf_asm_anchor, @function\n"
        "sf_asm_anchor:\n"
        "  ret\n");

int sf_after_asm(int v)
{
    int grown = sf_before_asm(v) * 2; /* WARN */
    return grown;
}
