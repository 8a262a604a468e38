#include <cstdio>
int main() { std::puts("dysim: not wired yet"); return 1; }
