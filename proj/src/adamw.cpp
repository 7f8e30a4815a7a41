/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/adamw.hpp"

#include "gyrocal/errors.hpp"

#include <cmath>

namespace gyrocal
{

AdamW::AdamW(std::size_t parameter_count, AdamWConfig config, NameFn name)
    : m_config(config), m_name(std::move(name)), m_m(parameter_count, 0.0), m_v(parameter_count, 0.0)
{
}

void AdamW::Step(std::span<double> parameters, std::span<const double> gradients)
{
  if (parameters.size() != m_m.size() || gradients.size() != m_m.size())
    throw InvalidArgument("AdamW::Step: expected " + std::to_string(m_m.size()) + " parameters");

  for (std::size_t i = 0; i < gradients.size(); ++i)
  {
    if (!std::isfinite(gradients[i]))
    {
      const std::string name = m_name ? m_name(i) : "#" + std::to_string(i);
      throw NumericError("non-finite gradient for parameter " + name);
    }
  }

  ++m_t;
  const double b1 = m_config.beta1;
  const double b2 = m_config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(m_t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(m_t));
  const double lr = m_config.learning_rate;

  for (std::size_t i = 0; i < parameters.size(); ++i)
  {
    const double g = gradients[i];
    m_m[i] = b1 * m_m[i] + (1.0 - b1) * g;
    m_v[i] = b2 * m_v[i] + (1.0 - b2) * g * g;
    const double m_hat = m_m[i] / correction1;
    const double v_hat = m_v[i] / correction2;
    parameters[i] -= lr * (m_hat / (std::sqrt(v_hat) + m_config.epsilon) +
                           m_config.weight_decay * parameters[i]);
  }
}

} // namespace gyrocal
