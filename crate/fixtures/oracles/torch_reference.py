# Reference values for crates/core/tests/oracles.rs (float64 autograd).
# Usage: python3 torch_reference.py
import math, torch
torch.set_default_dtype(torch.float64)
def layer(L, i_dim, o_dim):
    W = torch.tensor([[0.5*math.sin(1.3*(L+1)+0.7*i+0.31*j*(i+1)) for j in range(o_dim)] for i in range(i_dim)], requires_grad=True)
    b = torch.tensor([0.1*math.cos(L+j) for j in range(o_dim)], requires_grad=True)
    return W, b
dims = [(3,4),(4,2),(2,4),(4,3),(2,2)]
X = torch.tensor([[1.2*math.sin(0.9*r+1.7*c) for c in range(3)] for r in range(6)])
y = torch.tensor([0,1,1,0,1,0])
src = [0,2,4]; crs=[1,3,5]
sx, sz, sm = 1.5, 0.9, 1.1
beta, lam, lam2 = 2.0, 0.6, 0.4
def gram(A, s):
    d = ((A[:,None,:]-A[None,:,:])**2).sum(-1)
    K = torch.exp(-d/(2*s*s))
    dg = torch.sqrt(torch.diag(K))
    return K/(dg[:,None]*dg[None,:])/A.shape[0]
def H2(K): return -torch.log2((K*K).sum())
def MI(A,B):
    Ka, Kb = gram(A,sx), gram(B,sz)
    h = Ka*Kb; h = h/torch.trace(h)
    return H2(Ka)+H2(Kb)-H2(h)
def mmd(a,b,s):
    k=lambda p,q: torch.exp(-((p[:,None,:]-q[None,:,:])**2).sum(-1)/(2*s*s))
    return k(a,a).mean()-2*k(a,b).mean()+k(b,b).mean()
def cov(a):
    c=a-a.mean(0); return c.T@c/(a.shape[0]-1)
for kind in ["mtls_red","dmtae","mmd_ae","coral","nsae"]:
    P=[layer(L,i,o) for L,(i,o) in enumerate(dims)]
    def enc(x):
        h=torch.relu(x@P[0][0]+P[0][1]); return h@P[1][0]+P[1][1]
    def dec(z):
        h=torch.relu(z@P[2][0]+P[2][1]); return h@P[3][0]+P[3][1]
    z=enc(X); xh=dec(z); lg=z@P[4][0]+P[4][1]
    ce=torch.nn.functional.cross_entropy(lg,y)
    rec=((X-xh)**2).sum(1).mean()
    if kind=="mtls_red": reg=MI(X,z); tot=ce+lam*rec+beta*reg
    elif kind=="dmtae": reg=torch.tensor(0.); tot=ce+lam*rec
    elif kind=="mmd_ae": reg=mmd(z[src],z[crs],sm); tot=ce+lam*rec+lam2*reg
    elif kind=="coral": reg=((cov(z[src])-cov(z[crs]))**2).sum(); tot=ce+lam*rec+beta*reg
    else: reg=((xh-dec(enc(xh)))**2).sum(1).mean(); tot=ce+lam*rec+lam2*reg
    tot.backward()
    g=[]
    for W,b in P: g+=W.grad.flatten().tolist()+b.grad.tolist()
    print(f"// {kind}: ce={ce.item()!r} rec={rec.item()!r} reg={reg.item()!r}")
    print(f"const {kind.upper()}_TOTAL: f64 = {tot.item()!r};")
    print(f"const {kind.upper()}_GRAD: [f64; {len(g)}] = [" + ", ".join(repr(v) for v in g) + "];")
# kernel-level oracles
A=torch.tensor([[0.,0.],[1.,0.],[0.,2.],[1.,1.],[3.,1.]]); B=torch.tensor([[0.5],[-1.],[0.3],[2.],[0.]],requires_grad=True)
sx,sz=1.3,0.8
Ka=gram(A,sx); 
ev=torch.linalg.eigvalsh(Ka)
print("const H2_X:", H2(Ka).item().__repr__())
print("const H15_X:", (1/(1-1.5)*torch.log2((ev.clamp(min=0)**1.5).sum())).item().__repr__())
mi=MI(A,B); print("const MI_AB_BITS:", repr(mi.item()))
(mi*math.log(2)).backward(); print("const MI_GRAD_NATS:", B.grad.flatten().tolist())
a=torch.tensor([[0.,1.],[1.,1.],[2.,0.5]]); b=torch.tensor([[0.5,0.],[1.5,2.],[0.,0.],[1.,1.]])
print("const MMD_AB:", repr(mmd(a,b,0.7).item()))
print("const CORAL_AB:", repr(((cov(a)-cov(b))**2).sum().item()))
