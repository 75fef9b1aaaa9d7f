#pragma once

namespace tps {

/// Selects the OpenMP kernel or its serial reference.
enum class Execution { serial, parallel };

/// Sets the OpenMP worker count for subsequent parallel regions; n <= 0
/// restores the runtime default.
void set_workers(int n);
int max_workers();

}  // namespace tps
