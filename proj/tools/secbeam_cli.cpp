#include <iostream>

int main() {
  std::cout << "secbeam: CLI not wired yet\n";
  return 1;
}
