#pragma once

#include "proxgen/block_tree.hpp"
#include "proxgen/errors.hpp"
#include "proxgen/family.hpp"
#include "proxgen/features.hpp"
#include "proxgen/genrl.hpp"
#include "proxgen/jump_chain.hpp"
#include "proxgen/mdp.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/oracles.hpp"
#include "proxgen/policy.hpp"
#include "proxgen/query.hpp"
#include "proxgen/rng.hpp"
#include "proxgen/solvers.hpp"
#include "proxgen/strong_family.hpp"
#include "proxgen/value.hpp"
#include "proxgen/version.hpp"
