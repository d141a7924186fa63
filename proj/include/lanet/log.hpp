#pragma once

namespace lanet {

/// Routes log output to stderr at the level named by LANET_LOG
/// (trace, debug, info, warn, error, off; default info).
void init_logging();

}  // namespace lanet
