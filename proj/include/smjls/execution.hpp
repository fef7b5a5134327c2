#pragma once

namespace smjls {

/// Execution policy for the data-parallel kernels (ensemble simulation,
/// parameter sweeps, multistart optimization). Serial runs are kept as the
/// reference path; results are identical regardless of policy or thread
/// count because all reductions use a fixed block structure.
enum class Execution { Serial, Parallel };

} // namespace smjls
