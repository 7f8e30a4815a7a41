/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gyrocal
{

struct AdamWConfig
{
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW
{
public:
  using NameFn = std::function<std::string(std::size_t)>;

  AdamW(std::size_t parameter_count, AdamWConfig config, NameFn name = {});

  // Throws NumericError naming the first parameter with a non-finite
  // gradient; parameters and state are left untouched in that case.
  void Step(std::span<double> parameters, std::span<const double> gradients);

  const AdamWConfig& config() const noexcept { return m_config; }
  const std::vector<double>& first_moment() const noexcept { return m_m; }
  const std::vector<double>& second_moment() const noexcept { return m_v; }
  std::size_t step_count() const noexcept { return m_t; }

private:
  AdamWConfig m_config;
  NameFn m_name;
  std::vector<double> m_m;
  std::vector<double> m_v;
  std::size_t m_t = 0;
};

} // namespace gyrocal
