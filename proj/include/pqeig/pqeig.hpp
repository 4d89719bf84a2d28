#pragma once

#include "pqeig/errors.hpp"
#include "pqeig/functional.hpp"
#include "pqeig/mesh.hpp"
#include "pqeig/oracle.hpp"
#include "pqeig/proofcheck.hpp"
#include "pqeig/solver.hpp"
