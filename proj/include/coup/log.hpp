#pragma once

namespace coup {

/// Sends logs to stderr at the level named by COUP_LOG (trace, debug, info,
/// warn, error, off); defaults to info.
void init_logging();

} // namespace coup
