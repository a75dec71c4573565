#include <cstdio>

int main() {
  std::puts("growthgr: cli under construction");
  return 0;
}
