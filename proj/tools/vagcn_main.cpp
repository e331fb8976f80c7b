#include <cstdio>

int main() {
    std::puts("vagcn: command-line interface under construction");
    return 2;
}
