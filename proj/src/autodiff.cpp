/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/autodiff.hpp"

namespace gyrocal::ad
{

Tape*& ActiveTape()
{
  thread_local Tape* tape = nullptr;
  return tape;
}

void Tape::Backward(std::uint32_t output, std::vector<double>& adjoints) const
{
  if (output >= m_edge_end.size())
    throw InvalidArgument("Tape::Backward: output node is not on this tape");

  adjoints.assign(m_edge_end.size(), 0.0);
  adjoints[output] = 1.0;

  for (std::size_t node = output + 1; node-- > 0;)
  {
    const double adjoint = adjoints[node];
    if (adjoint == 0.0)
      continue;
    const std::size_t begin = node == 0 ? 0 : m_edge_end[node - 1];
    const std::size_t end = m_edge_end[node];
    for (std::size_t e = begin; e < end; ++e)
      adjoints[m_edges[e].parent] += m_edges[e].partial * adjoint;
  }
}

} // namespace gyrocal::ad
