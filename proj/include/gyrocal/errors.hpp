/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace gyrocal
{

// Caller passed something that violates a documented precondition.
class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Input files or datasets are malformed, missing or inconsistent.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, divergence, or a numerically undefined operation.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace gyrocal
