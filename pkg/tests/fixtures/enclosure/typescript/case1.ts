export interface User {
    id: number;
    name: string;
    describe(): string;
}
