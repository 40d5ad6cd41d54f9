#pragma once
namespace kfem::cli { inline int run(int, char**){ return 0; } }
