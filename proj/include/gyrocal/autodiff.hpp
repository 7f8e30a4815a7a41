/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Scalar reverse-mode differentiation.
//
// A Tape is a Wengert list: every non-constant intermediate is a node holding
// the local partial derivatives with respect to its parents. Nodes are written
// in evaluation order, so one backward sweep over the list accumulates exact
// adjoints for every leaf. Var is a 16-byte handle (primal value plus node
// index). Values that do not depend on any leaf stay constants and never
// touch the tape.
//
// Model code is written once as templates over the scalar type and is
// instantiated with double for inference and with Var for training. The
// overload set below (Value, AffineDot, Prelu, Leaky, sqrt, ...) is what keeps
// those templates agnostic.

#include "gyrocal/errors.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace gyrocal::ad
{

inline constexpr std::uint32_t kConstantIndex = std::numeric_limits<std::uint32_t>::max();

struct Edge
{
  std::uint32_t parent;
  double partial;
};

class Tape
{
public:
  Tape() { m_edge_end.reserve(1 << 16); m_edges.reserve(1 << 18); }

  void Clear()
  {
    m_edge_end.clear();
    m_edges.clear();
  }

  std::size_t NodeCount() const noexcept { return m_edge_end.size(); }
  std::size_t EdgeCount() const noexcept { return m_edges.size(); }

  std::uint32_t AddLeaf()
  {
    m_edge_end.push_back(m_edges.size());
    return static_cast<std::uint32_t>(m_edge_end.size() - 1);
  }

  void PushEdge(std::uint32_t parent, double partial) { m_edges.push_back({parent, partial}); }

  std::uint32_t EndNode()
  {
    if (m_edge_end.size() >= kConstantIndex)
      throw NumericError("autodiff tape exhausted its node index space");
    m_edge_end.push_back(m_edges.size());
    return static_cast<std::uint32_t>(m_edge_end.size() - 1);
  }

  // Reverse sweep seeded at `output`. `adjoints` is resized to NodeCount().
  void Backward(std::uint32_t output, std::vector<double>& adjoints) const;

private:
  std::vector<std::size_t> m_edge_end; // exclusive end offset into m_edges per node
  std::vector<Edge> m_edges;
};

// The tape that Var arithmetic records onto for the current thread.
Tape*& ActiveTape();

class TapeScope
{
public:
  explicit TapeScope(Tape& tape) : m_previous(ActiveTape()) { ActiveTape() = &tape; }
  ~TapeScope() { ActiveTape() = m_previous; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

private:
  Tape* m_previous;
};

class Var
{
public:
  Var() = default;
  Var(double value) : m_value(value) {} // NOLINT: constants convert implicitly
  Var(double value, std::uint32_t index) : m_value(value), m_index(index) {}

  // New independent variable on the active tape.
  static Var Leaf(double value)
  {
    Tape* tape = ActiveTape();
    if (tape == nullptr)
      throw InvalidArgument("Var::Leaf requires an active tape");
    return Var(value, tape->AddLeaf());
  }

  double value() const noexcept { return m_value; }
  std::uint32_t index() const noexcept { return m_index; }
  bool is_constant() const noexcept { return m_index == kConstantIndex; }

  Var& operator+=(const Var& rhs);
  Var& operator-=(const Var& rhs);
  Var& operator*=(const Var& rhs);

private:
  double m_value = 0.0;
  std::uint32_t m_index = kConstantIndex;
};

// Collects (parent, partial) pairs for one node; constant parents are dropped.
class NodeBuilder
{
public:
  void Add(const Var& parent, double partial)
  {
    if (parent.is_constant())
      return;
    if (m_tape == nullptr)
      m_tape = ActiveTape();
    m_tape->PushEdge(parent.index(), partial);
    m_has_edges = true;
  }

  Var Finish(double value)
  {
    if (!m_has_edges)
      return Var(value);
    return Var(value, m_tape->EndNode());
  }

private:
  Tape* m_tape = nullptr;
  bool m_has_edges = false;
};

inline double Value(double x) { return x; }
inline double Value(const Var& x) { return x.value(); }

inline Var operator+(const Var& a, const Var& b)
{
  NodeBuilder node;
  node.Add(a, 1.0);
  node.Add(b, 1.0);
  return node.Finish(a.value() + b.value());
}

inline Var operator-(const Var& a, const Var& b)
{
  NodeBuilder node;
  node.Add(a, 1.0);
  node.Add(b, -1.0);
  return node.Finish(a.value() - b.value());
}

inline Var operator-(const Var& a)
{
  NodeBuilder node;
  node.Add(a, -1.0);
  return node.Finish(-a.value());
}

inline Var operator*(const Var& a, const Var& b)
{
  NodeBuilder node;
  node.Add(a, b.value());
  node.Add(b, a.value());
  return node.Finish(a.value() * b.value());
}

inline Var operator/(const Var& a, const Var& b)
{
  const double inv = 1.0 / b.value();
  const double out = a.value() * inv;
  NodeBuilder node;
  node.Add(a, inv);
  node.Add(b, -out * inv);
  return node.Finish(out);
}

inline Var& Var::operator+=(const Var& rhs) { return *this = *this + rhs; }
inline Var& Var::operator-=(const Var& rhs) { return *this = *this - rhs; }
inline Var& Var::operator*=(const Var& rhs) { return *this = *this * rhs; }

// sqrt'(0) is taken as 0 (a valid subgradient of the Euclidean norm at the
// origin) so that an exact zero residual yields a zero gradient.
inline Var sqrt(const Var& x)
{
  const double root = std::sqrt(x.value());
  NodeBuilder node;
  node.Add(x, root > 0.0 ? 0.5 / root : 0.0);
  return node.Finish(root);
}

inline Var sin(const Var& x)
{
  NodeBuilder node;
  node.Add(x, std::cos(x.value()));
  return node.Finish(std::sin(x.value()));
}

inline Var cos(const Var& x)
{
  NodeBuilder node;
  node.Add(x, -std::sin(x.value()));
  return node.Finish(std::cos(x.value()));
}

inline Var atan2(const Var& y, const Var& x)
{
  const double r2 = x.value() * x.value() + y.value() * y.value();
  NodeBuilder node;
  if (r2 > 0.0)
  {
    node.Add(y, x.value() / r2);
    node.Add(x, -y.value() / r2);
  }
  return node.Finish(std::atan2(y.value(), x.value()));
}

// sum_i a[i] * x[i] + bias, recorded as a single node.
inline double AffineDot(std::span<const double> a, std::span<const double> x, double bias)
{
  double acc = bias;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += a[i] * x[i];
  return acc;
}

inline Var AffineDot(std::span<const Var> a, std::span<const Var> x, const Var& bias)
{
  double acc = bias.value();
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += a[i].value() * x[i].value();
  NodeBuilder node;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    node.Add(a[i], x[i].value());
    node.Add(x[i], a[i].value());
  }
  node.Add(bias, 1.0);
  return node.Finish(acc);
}

// x for x >= 0, slope * x otherwise; slope is trainable.
inline double Prelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline Var Prelu(const Var& x, const Var& slope)
{
  NodeBuilder node;
  if (x.value() >= 0.0)
  {
    node.Add(x, 1.0);
    return node.Finish(x.value());
  }
  node.Add(x, slope.value());
  node.Add(slope, x.value());
  return node.Finish(slope.value() * x.value());
}

// Fixed-slope variant.
inline double Leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline Var Leaky(const Var& x, double slope)
{
  NodeBuilder node;
  const bool positive = x.value() >= 0.0;
  node.Add(x, positive ? 1.0 : slope);
  return node.Finish(positive ? x.value() : slope * x.value());
}

struct GradientResult
{
  double value = 0.0;
  std::vector<double> gradient;
};

// Evaluates `f` on leaves initialised from `point` and returns the value with
// the exact gradient. `f` receives std::span<const Var> and returns Var.
template<typename F>
GradientResult Gradient(std::span<const double> point, F&& f)
{
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (double x : point)
    leaves.push_back(Var::Leaf(x));

  const Var out = std::forward<F>(f)(std::span<const Var>(leaves));

  GradientResult result;
  result.value = out.value();
  result.gradient.assign(point.size(), 0.0);
  if (out.is_constant())
    return result;

  std::vector<double> adjoints;
  tape.Backward(out.index(), adjoints);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    result.gradient[i] = adjoints[leaves[i].index()];
  return result;
}

} // namespace gyrocal::ad
