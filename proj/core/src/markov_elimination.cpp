#include "kinetic/markov_elimination.hpp"

#include <algorithm>
#include <map>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

#include "kinetic/errors.hpp"

namespace kinetic {

namespace {

// Off-diagonal rates in a band |i - j| <= w.
class Band {
 public:
  Band(int n, int w) : n_(n), w_(w), data_(static_cast<std::size_t>(n) * (2 * w + 1), 0.0) {}
  int size() const { return n_; }
  int width() const { return w_; }
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * (2 * w_ + 1) + (j - i + w_)]; }

 private:
  int n_;
  int w_;
  std::vector<double> data_;
};

int bandwidth(const SparseMatrix& q, const std::vector<int>& local) {
  int w = 0;
  for (int i = 0; i < q.outerSize(); ++i) {
    if (local[static_cast<std::size_t>(i)] < 0) continue;
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i || local[static_cast<std::size_t>(j)] < 0 || it.value() <= 0.0) continue;
      w = std::max(w, std::abs(local[static_cast<std::size_t>(i)] - local[static_cast<std::size_t>(j)]));
    }
  }
  return std::max(w, 1);
}

Band off_diagonal_band(const SparseMatrix& q, const std::vector<int>& local, int m) {
  Band band(m, bandwidth(q, local));
  for (int i = 0; i < q.outerSize(); ++i) {
    const int li = local[static_cast<std::size_t>(i)];
    if (li < 0) continue;
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int lj = local[static_cast<std::size_t>(it.col())];
      if (lj < 0 || lj == li || it.value() <= 0.0) continue;
      band.at(li, lj) += it.value();
    }
  }
  return band;
}

}  // namespace

std::vector<double> solve_killed_chain(const SparseMatrix& q, double lambda, const std::vector<double>& g) {
  const int n = static_cast<int>(q.rows());
  if (static_cast<int>(g.size()) != n) throw ShapeError("right-hand side length does not match Q");
  std::vector<int> local(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) local[static_cast<std::size_t>(i)] = i;
  Band band = off_diagonal_band(q, local, n);
  const int w = band.width();
  std::vector<double> kill(static_cast<std::size_t>(n), lambda);
  std::vector<double> rhs = g;
  std::vector<double> denom(static_cast<std::size_t>(n), 0.0);
  for (int p = n - 1; p >= 1; --p) {
    const int lo = std::max(0, p - w);
    double s = kill[static_cast<std::size_t>(p)];
    for (int j = lo; j < p; ++j) s += band.at(p, j);
    denom[static_cast<std::size_t>(p)] = s;
    for (int i = lo; i < p; ++i) {
      const double qip = band.at(i, p);
      if (qip == 0.0) continue;
      const double f = qip / s;
      kill[static_cast<std::size_t>(i)] += f * kill[static_cast<std::size_t>(p)];
      rhs[static_cast<std::size_t>(i)] += f * rhs[static_cast<std::size_t>(p)];
      for (int j = lo; j < p; ++j) {
        if (j != i) band.at(i, j) += f * band.at(p, j);
      }
    }
  }
  denom[0] = kill[0];
  std::vector<double> out(static_cast<std::size_t>(n));
  out[0] = rhs[0] / denom[0];
  for (int p = 1; p < n; ++p) {
    const int lo = std::max(0, p - w);
    double s = rhs[static_cast<std::size_t>(p)];
    for (int j = lo; j < p; ++j) s += band.at(p, j) * out[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(p)] = s / denom[static_cast<std::size_t>(p)];
  }
  return out;
}

namespace {

std::vector<double> stationary_of_class(const SparseMatrix& q, const std::vector<int>& states) {
  const int m = static_cast<int>(states.size());
  if (m == 1) return {1.0};
  std::vector<int> local(static_cast<std::size_t>(q.rows()), -1);
  for (int k = 0; k < m; ++k) local[static_cast<std::size_t>(states[static_cast<std::size_t>(k)])] = k;
  Band band = off_diagonal_band(q, local, m);
  const int w = band.width();
  std::vector<double> denom(static_cast<std::size_t>(m), 0.0);
  for (int p = m - 1; p >= 1; --p) {
    const int lo = std::max(0, p - w);
    double s = 0.0;
    for (int j = lo; j < p; ++j) s += band.at(p, j);
    if (!(s > 0.0)) throw PreconditionViolated("closed class is not irreducible");
    denom[static_cast<std::size_t>(p)] = s;
    for (int i = lo; i < p; ++i) {
      const double qip = band.at(i, p);
      if (qip == 0.0) continue;
      const double f = qip / s;
      for (int j = lo; j < p; ++j) {
        if (j != i) band.at(i, j) += f * band.at(p, j);
      }
    }
  }
  std::vector<double> pi(static_cast<std::size_t>(m), 0.0);
  pi[0] = 1.0;
  for (int p = 1; p < m; ++p) {
    const int lo = std::max(0, p - w);
    double s = 0.0;
    for (int j = lo; j < p; ++j) s += pi[static_cast<std::size_t>(j)] * band.at(j, p);
    pi[static_cast<std::size_t>(p)] = s / denom[static_cast<std::size_t>(p)];
  }
  double total = 0.0;
  for (double v : pi) total += v;
  for (double& v : pi) v /= total;
  return pi;
}

}  // namespace

std::vector<ClosedClass> closed_classes(const SparseMatrix& q) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;
  const int n = static_cast<int>(q.rows());
  Graph graph(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      if (it.col() != i && it.value() > 0.0) boost::add_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(it.col()), graph);
    }
  }
  std::vector<int> component(static_cast<std::size_t>(n));
  const int count = boost::strong_components(graph, component.data());
  std::vector<bool> closed(static_cast<std::size_t>(count), true);
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      if (it.col() != i && it.value() > 0.0 &&
          component[static_cast<std::size_t>(i)] != component[static_cast<std::size_t>(it.col())]) {
        closed[static_cast<std::size_t>(component[static_cast<std::size_t>(i)])] = false;
      }
    }
  }
  std::map<int, std::vector<int>> members;  // keyed by smallest state
  std::vector<int> first(static_cast<std::size_t>(count), -1);
  for (int i = 0; i < n; ++i) {
    const int c = component[static_cast<std::size_t>(i)];
    if (!closed[static_cast<std::size_t>(c)]) continue;
    if (first[static_cast<std::size_t>(c)] < 0) first[static_cast<std::size_t>(c)] = i;
    members[first[static_cast<std::size_t>(c)]].push_back(i);
  }
  std::vector<ClosedClass> out;
  for (auto& [key, states] : members) {
    ClosedClass cc;
    cc.states = std::move(states);
    cc.stationary = stationary_of_class(q, cc.states);
    cc.trap = cc.states.size() == 1;
    out.push_back(std::move(cc));
  }
  return out;
}

}  // namespace kinetic
