#pragma once

namespace psyphy {

// Entry point for the `psyphy` executable. Returns the process exit status:
// 0 on success, 1 on a pipeline error, 2 on a usage error.
int dispatch(int argc, char** argv);

}  // namespace psyphy
