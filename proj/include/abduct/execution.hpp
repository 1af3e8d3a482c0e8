#pragma once

namespace abduct {

/// Serial reference path or OpenMP-parallel path; both give identical results.
enum class Execution { kSerial, kParallel };

}  // namespace abduct
