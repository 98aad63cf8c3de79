#include <qsat/qsat.hpp>

int main() {
  qsat::SplitRng r({1, 0});
  auto g = qsat::sample_er_graph(30, 27, 3, {1, 0});
  auto cd = qsat::strip_core(g);
  (void)cd;
  return g.n_qubits == 30 ? 0 : 1;
}
