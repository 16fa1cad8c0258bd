#pragma once

namespace selfdesc::cli {

// Exit status: 0 success, 1 usage error, 2 data fault. Diagnostics go to
// stderr; data goes to files or stdout.
int dispatch(int argc, char** argv);

}  // namespace selfdesc::cli
